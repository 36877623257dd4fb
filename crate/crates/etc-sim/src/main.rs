fn main() {
    std::process::exit(etc_sim::cli::cli_main(std::env::args_os()));
}

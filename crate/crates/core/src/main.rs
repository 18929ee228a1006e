fn main() {
    std::process::exit(lazygnn::cli::run_cli(std::env::args_os()));
}

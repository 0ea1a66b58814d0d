fn main() {
    std::process::exit(surrokit_cli::run_with_args(std::env::args_os()));
}

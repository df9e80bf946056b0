fn main() {
    std::process::exit(subfinsler_cli::run(std::env::args_os()));
}

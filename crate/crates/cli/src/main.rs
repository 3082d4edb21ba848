fn main() {
    std::process::exit(robustkit_cli::run(std::env::args_os()));
}

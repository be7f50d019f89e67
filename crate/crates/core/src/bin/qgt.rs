fn main() {
    std::process::exit(qgt::cli::run(std::env::args_os()));
}

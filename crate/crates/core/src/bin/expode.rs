fn main() {
    std::process::exit(expode::cli::run(std::env::args_os()));
}

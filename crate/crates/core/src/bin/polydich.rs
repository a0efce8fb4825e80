fn main() {
    std::process::exit(polydich::cli::run(std::env::args_os()));
}

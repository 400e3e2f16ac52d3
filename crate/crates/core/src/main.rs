fn main() {
    std::process::exit(tabtext::cli::run(std::env::args_os()));
}

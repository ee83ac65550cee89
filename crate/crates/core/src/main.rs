fn main() {
    std::process::exit(nasforge::cli::run(std::env::args_os()));
}

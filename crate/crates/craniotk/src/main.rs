fn main() {
    std::process::exit(craniotk::cli::run(std::env::args_os()));
}

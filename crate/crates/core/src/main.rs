fn main() {
    std::process::exit(codemix::cli::run(std::env::args_os()));
}

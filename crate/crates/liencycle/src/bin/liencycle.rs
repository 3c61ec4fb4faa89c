fn main() {
    std::process::exit(liencycle::cli::run(std::env::args_os()));
}

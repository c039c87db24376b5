fn main() {
    std::process::exit(isaacs_fd::cli::run_from(std::env::args_os()));
}

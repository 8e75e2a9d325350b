fn main() {
    std::process::exit(ultragap::cli::run(std::env::args_os()));
}

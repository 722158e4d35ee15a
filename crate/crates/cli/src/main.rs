fn main() {
    std::process::exit(assa::cli::run_from(std::env::args_os()));
}

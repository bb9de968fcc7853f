fn main() {
    std::process::exit(rndf::cli::run_from(std::env::args_os()));
}

fn main() {
    std::process::exit(apsp::cli::run_from(std::env::args_os()));
}

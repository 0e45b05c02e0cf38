fn main() {
    ssvar::cli::init_threads();
    std::process::exit(ssvar::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(webzipf::cli::run(std::env::args_os()));
}

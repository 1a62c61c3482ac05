fn main() {
    std::process::exit(pdsflow::cli::run(std::env::args_os()));
}

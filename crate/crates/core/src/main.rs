fn main() {
    std::process::exit(klslab::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(kamwave::cli::run(std::env::args_os()));
}

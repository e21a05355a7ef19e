fn main() {
    std::process::exit(hardy_plap::cli::run(std::env::args_os()));
}

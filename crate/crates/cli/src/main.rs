fn main() {
    std::process::exit(reo_cli::run(std::env::args_os()));
}

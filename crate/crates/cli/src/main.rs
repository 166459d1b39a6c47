fn main() {
    std::process::exit(x2car_cli::run_from(std::env::args_os()));
}

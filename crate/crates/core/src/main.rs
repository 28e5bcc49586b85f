fn main() {
    std::process::exit(crowd_forecast::cli::run(std::env::args_os()));
}

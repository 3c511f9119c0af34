fn main() {
    std::process::exit(fraciso::cli::run(std::env::args_os()));
}

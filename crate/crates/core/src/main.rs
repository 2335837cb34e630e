fn main() {
    std::process::exit(pathstat::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(varsel::cli::run(std::env::args_os()));
}

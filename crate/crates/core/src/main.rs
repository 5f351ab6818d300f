fn main() {
    std::process::exit(vargan::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(critmeasure::cli::run(std::env::args_os()));
}

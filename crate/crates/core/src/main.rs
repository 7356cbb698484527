fn main() {
    std::process::exit(mirrormatch::cli::run(std::env::args_os()));
}

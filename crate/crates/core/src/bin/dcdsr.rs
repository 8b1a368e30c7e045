fn main() {
    std::process::exit(dcdsr::cli::run(std::env::args_os()));
}

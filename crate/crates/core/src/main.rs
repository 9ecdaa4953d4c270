fn main() {
    std::process::exit(setdyn::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(ergodlab::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(oakcrowd::cli::run(std::env::args_os()));
}

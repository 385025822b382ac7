fn main() {
    std::process::exit(memnet::cli::run(std::env::args_os()));
}

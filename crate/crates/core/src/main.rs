fn main() {
    std::process::exit(stegnet::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(canonlab_cli::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(maxcut_cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(ccspectra_cli::run(std::env::args_os()));
}

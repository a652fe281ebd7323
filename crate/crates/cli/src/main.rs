fn main() {
    std::process::exit(twinbeam_cli::cli::run(std::env::args_os()));
}

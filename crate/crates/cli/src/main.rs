fn main() {
    std::process::exit(tcad_cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(gridsvc_cli::run(std::env::args_os()));
}

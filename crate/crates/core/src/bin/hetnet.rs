fn main() {
    std::process::exit(hetnet_core::cli::run(std::env::args_os()));
}

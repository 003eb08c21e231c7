fn main() {
    std::process::exit(vmbspec::cli::run(std::env::args_os()));
}

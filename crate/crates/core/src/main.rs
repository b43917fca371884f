fn main() {
    std::process::exit(mirror_cool::cli::main_with_args(std::env::args_os()));
}

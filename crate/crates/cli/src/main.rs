fn main() {
    std::process::exit(ossgcl_cli::main_with_args(std::env::args_os()));
}

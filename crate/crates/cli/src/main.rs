fn main() {
    std::process::exit(smbbot_cli::run(std::env::args_os()));
}

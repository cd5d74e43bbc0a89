import pyfiglet


def print_banner(console, subtitle: str = "two-phase cross-diffusion simulator"):
    width = console.size.width
    if width > 60:
        logo = pyfiglet.figlet_format("BIPHASE", font="slant")
    else:
        logo = "BIPHASE"
    console.print(f"[magenta]{logo}[/magenta]\n[bold]BIPHASE: {subtitle}[/bold]", style="magenta")

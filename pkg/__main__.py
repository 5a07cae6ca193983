"""
Ponto de entrada principal.

USO:
python . --help
python . train --data-dir <dir> --preset <movie|book|music|restaurant>
"""

from tools.cli import cli

if __name__ == "__main__":
    cli()

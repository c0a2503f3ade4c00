"""Allow running as: python -m fdtransport"""

from fdtransport.cli import app

app()

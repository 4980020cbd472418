# utils package
from .text import format_sig, json_number, strip_ansi

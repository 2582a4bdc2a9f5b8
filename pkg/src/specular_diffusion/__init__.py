# Read and written by 'hatch version' command.
VERSION = "0.1.0"

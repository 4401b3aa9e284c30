"""
Main entry point for running as module: python -m y00lab
"""

from y00lab.cli import main

if __name__ == '__main__':
    main()

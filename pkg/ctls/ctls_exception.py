"""
This will contain the general exceptions for the whole project. This way,
any exception could be caught with the root CtlsException.
"""


class CtlsException(Exception):
    pass

from flask import Blueprint

bp = Blueprint('operators', __name__, cli_group=None)

from weylmoyal.operators import commands

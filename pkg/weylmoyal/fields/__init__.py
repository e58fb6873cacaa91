from flask import Blueprint

bp = Blueprint('fields', __name__, cli_group=None)

from weylmoyal.fields import commands

from flask import Blueprint

bp = Blueprint('products', __name__, cli_group=None)

from weylmoyal.products import commands

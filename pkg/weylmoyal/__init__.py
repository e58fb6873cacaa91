import logging
import os

from flask import Flask

from config import Config


def create_app(config_class=Config):
    app = Flask(__name__)
    app.config.from_object(config_class)

    sentry_dsn = (os.environ.get('SENTRY_DSN') or '').strip()
    if sentry_dsn:
        import sentry_sdk
        from sentry_sdk.integrations.flask import FlaskIntegration

        sentry_sdk.init(
            dsn=sentry_dsn,
            integrations=[FlaskIntegration()],
            traces_sample_rate=float(os.environ.get('SENTRY_TRACES_SAMPLE_RATE') or 0),
            environment=(os.environ.get('SENTRY_ENVIRONMENT') or 'production'),
            release=(os.environ.get('SENTRY_RELEASE') or None),
            send_default_pii=False,
        )

    if app.config.get('VERBOSE'):
        app.logger.setLevel(logging.DEBUG)

    from weylmoyal.products import bp as products_bp
    app.register_blueprint(products_bp)

    from weylmoyal.operators import bp as operators_bp
    app.register_blueprint(operators_bp)

    from weylmoyal.fields import bp as fields_bp
    app.register_blueprint(fields_bp)

    return app

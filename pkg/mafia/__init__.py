"""
MAFIA measurement programs for programmable switches. Compiler, simulator
and HTTP API (Flask application factory)
"""
import logging

from flask import Flask
from flask_cors import CORS

LOG_FORMAT = '[%(name)s] %(levelname)s %(message)s'

__version__ = '1.0.0'


def setup_logging(level='INFO'):
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)


def create_app(config_class=None):
    # Config is imported here so entry points can load .env first
    if config_class is None:
        from .config import Config as config_class

    app = Flask(__name__)

    # Load config
    app.config['MAX_TRACE_RECORDS'] = config_class.MAX_TRACE_RECORDS
    app.config['TARGET_MODEL'] = config_class.TARGET_MODEL
    app.json.sort_keys = config_class.JSON_SORT_KEYS

    setup_logging(config_class.LOG_LEVEL)

    # Initialize CORS for API
    CORS(app, resources={r"/api/*": {"origins": config_class.CORS_ORIGINS}})

    # Register blueprints
    from .routes.api_v1 import api_bp

    app.register_blueprint(api_bp, url_prefix='/api/v1')

    return app

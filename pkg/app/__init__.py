from flask import Flask
from .routes import main


def create_app(config=None):
    app = Flask(__name__)

    # Keep report fields in computation order
    app.json.sort_keys = False
    app.config['MAX_GRID_POINTS'] = 1000
    app.config['MAX_DRAWS'] = 10 ** 6
    if config:
        app.config.update(config)

    # Register blueprints
    app.register_blueprint(main)

    return app

import os

import uvicorn
from dotenv import load_dotenv

load_dotenv(".env")

from posecap.core.config import settings

if __name__ == "__main__":
    """
    Run the HTTP service with environment-specific settings.
    """
    uvicorn_kwargs = {
        "app": "posecap.main:app",  # import string so reload and workers work
        "port": settings.PORT,
        "log_level": settings.LOG_LEVEL.lower(),
    }

    if settings.ENVIRONMENT == "production":
        # Production: forwarded headers, multiple workers
        uvicorn_kwargs.update({
            "host": "0.0.0.0",
            "workers": int(os.getenv("WORKERS", "2")),
            "proxy_headers": True,
            "forwarded_allow_ips": "*",
        })
    else:
        # Development: auto-reload and single worker
        uvicorn_kwargs.update({
            "host": "127.0.0.1",
            "reload": True,
        })

    uvicorn.run(**uvicorn_kwargs)

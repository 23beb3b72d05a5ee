import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "condpath.settings")
django.setup()

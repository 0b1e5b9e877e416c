import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'dcem_project.settings')
django.setup()

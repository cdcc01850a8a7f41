import os

import django

# Mirror manage.py so the Django-based test modules can be collected by pytest.
os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'rpd_diff.settings')
django.setup()

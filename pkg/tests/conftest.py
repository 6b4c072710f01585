from hypothesis import settings

settings.register_profile("cteg", deadline=None, max_examples=60)
settings.load_profile("cteg")

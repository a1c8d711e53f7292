import param as pm

from .errors import DomainError


class Record(pm.Parameterized):
    """
    Parameterized record whose bound and type violations surface as DomainError.

    Subclasses declare their fields as params (usually ``constant=True`` so the record is immutable once built) and
    put cross-field invariants in ``_validate``, which runs after every field has been set.
    """

    def __init__(self, **params):
        try:
            super(Record, self).__init__(**params)
        except DomainError:
            raise
        except ValueError as err:
            raise DomainError(str(err)) from err
        self._validate()

    def _validate(self):
        pass

    def values(self):
        """Field values without param's auto-generated ``name``."""
        values = dict(self.param.values())
        values.pop("name", None)
        return values

from neunets.errors import NeunetsError

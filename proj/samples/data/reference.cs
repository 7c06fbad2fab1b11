bool IsEmpty(List<string> list)
{
    // Count is a property; no enumeration needed
    return list.Count == 0;
}
